"""chatforge: corpus cleaning, generation metrics, a desk-scale fine-tuning
harness, and a privacy-enforcing chat gateway, end to end."""

__version__ = "0.1.0"
