"""
PU-ACLMS: адаптивный фильтр с частичным обновлением коэффициентов
для некруговых комплексных сигналов и его теоретический анализ
"""

__version__ = "1.0.0"
__author__ = "PU-ACLMS Team"
