"""Environment registry."""


def get_env(name):
    """Instantiate an environment by tag."""
    key = name.lower()
    if key in ("lin1d", "synth1d"):
        from .synthetic import Lin1D

        return Lin1D()
    if key in ("osc1d", "synthdi"):
        from .synthetic import Osc1D

        return Osc1D()
    if key == "turbine":
        from .turbine import WindTurbine

        return WindTurbine()
    if key == "fwmav":
        from .fwmav import FlappingWing

        return FlappingWing()
    if key in ("cryo", "cryotank"):
        from .cryotank import CryoTank

        return CryoTank()
    raise ValueError(f"unknown environment '{name}'")


ENV_TAGS = ("turbine", "fwmav", "cryo", "lin1d", "osc1d")
