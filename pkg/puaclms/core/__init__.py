"""
Ядро: конфигурация, исключения, логирование
"""
