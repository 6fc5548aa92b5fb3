"""Packed-Shamir honest-majority MPC for fixed-point CNN inference."""

__version__ = "0.1.0"
