"""
Data package initialization
"""
