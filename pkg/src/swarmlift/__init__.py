"""swarmlift: multirotor-team payload transport simulation and robust tuning."""

__version__ = "0.1.0"
