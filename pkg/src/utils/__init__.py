"""
Logging helpers
"""
