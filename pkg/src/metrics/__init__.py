"""
Metrics package initialization
"""
