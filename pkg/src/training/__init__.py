"""
Training package initialization
"""
