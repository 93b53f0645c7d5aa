"""
Pipelines package initialization
"""
