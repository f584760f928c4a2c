from __future__ import annotations


class PlatoonError(Exception):
    """Базовый класс ошибок пакета."""


class InvalidArgumentError(PlatoonError, ValueError):
    pass


class InvalidStateError(PlatoonError, ValueError):
    pass


class ConfigValidationError(PlatoonError, ValueError):
    """
    Все нарушения конфигурации собираются в один список,
    чтобы пользователь увидел их разом, а не по одному.
    """

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(self.violations))


class BudgetExceededError(InvalidArgumentError):
    def __init__(self, points: int, budget: int, sizes: dict[str, int]):
        self.points = points
        self.budget = budget
        self.sizes = dict(sizes)
        shape = " x ".join(f"{k}[{n}]" for k, n in self.sizes.items()) or "(empty)"
        super().__init__(f"grid has {points} points ({shape}), budget is {budget}")


class DivergenceError(PlatoonError, ArithmeticError):
    def __init__(self, step: int, t: float, vehicle: int):
        self.step = step
        self.t = t
        self.vehicle = vehicle
        super().__init__(f"non-finite state at step {step} (t={t!r}) for vehicle {vehicle}")
