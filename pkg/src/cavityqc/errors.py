"""Exception hierarchy. Every error carries a machine-readable ``code``."""


class CavityQCError(Exception):
    code = "error"

    def __init__(self, message="", **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics

    def to_dict(self):
        d = {"error": self.code, "message": str(self)}
        if self.diagnostics:
            d["diagnostics"] = {k: float(v) if isinstance(v, (int, float)) else str(v)
                                for k, v in self.diagnostics.items()}
        return d


class OutOfTruncation(CavityQCError, ValueError):
    code = "out_of_truncation"


class LayoutMismatch(CavityQCError, ValueError):
    code = "layout_mismatch"


class NumericalFailure(CavityQCError, RuntimeError):
    code = "numerical_failure"


class SelectivityError(CavityQCError, ValueError):
    code = "selectivity_violation"


class CalibrationError(CavityQCError, RuntimeError):
    code = "calibration_failure"


class EntanglementResidue(CavityQCError, RuntimeError):
    code = "entanglement_residue"


class ConfigError(CavityQCError, ValueError):
    code = "config_invalid"


class AcceptanceViolation(CavityQCError, RuntimeError):
    code = "acceptance_violation"
