"""
carnot47 - sub-Riemannian geodesics of the (4,7) Carnot group
"""

__version__ = "1.0.0"
