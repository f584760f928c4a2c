"""Настройки и вспомогательные функции."""
