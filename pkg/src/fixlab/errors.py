class DomainError(ValueError):
    """An argument lies outside the domain of the model or formula."""


class InfeasibleError(RuntimeError):
    """The request is well-posed but cannot be carried out with the chosen method."""


class StepCapExceeded(InfeasibleError):
    def __init__(self, cap, replicate=None):
        self.cap = cap
        self.replicate = replicate
        where = "" if replicate is None else f" in replicate {replicate}"
        super().__init__(f"step cap of {cap} exceeded{where}")


class SchemaError(ValueError):
    """A result table does not carry the columns a consumer expects."""
