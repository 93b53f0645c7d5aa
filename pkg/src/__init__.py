"""
Adversarial filepath strings package initialization
"""

__version__ = "1.0.0"
__author__ = "Adversarial Strings Development Team"
__description__ = "Latent-space adversarial strings and robust multiple instance classifiers"
