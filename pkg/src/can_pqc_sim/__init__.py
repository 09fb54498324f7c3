"""
can_pqc_sim
Deterministic CAN bus simulation of post-quantum KEM and signature exchanges between ECUs.
"""
__all__ = ["__version__"]
__version__ = "0.1.0"
