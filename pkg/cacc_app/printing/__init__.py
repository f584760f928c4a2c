"""Печать/экспорт отчётов об устойчивости."""
