"""Deep Q-learning transmit power control in a simulated multi-hop mobile WiFi network."""

__version__ = "0.1.0"
