"""
Attacks package initialization
"""
