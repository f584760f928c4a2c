"""CACC-колонна: моделирование MPF с задержкой связи и анализ устойчивости."""
