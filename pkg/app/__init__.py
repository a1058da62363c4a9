"""
Lévy Tree Laboratory - Modular Architecture
"""

__version__ = "1.0.0"
__author__ = "Lévy Tree Lab"
