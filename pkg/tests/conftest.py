from hypothesis import HealthCheck, settings

# first calls pay numba compilation and quadrature setup, so no per-example deadline
settings.register_profile("specdim", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("specdim")
