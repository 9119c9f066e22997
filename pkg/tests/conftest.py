import os

from hypothesis import HealthCheck, settings

# numba compiles on first use, so the first example of a property can be slow
settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))
