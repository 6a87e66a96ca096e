"""mmWave V2V integrated sensing/communication link simulator with A2C and PPO agents."""

__version__ = "0.1.0"
