"""Plain-text dump of a model in an LP-file-like layout (debugging aid)."""

from __future__ import annotations

from .model import MilpModel


def _term(coef, name):
    sign = "-" if coef < 0 else "+"
    return f"{sign} {abs(coef)!r} {name}"


def _expr(coeffs, model):
    if not coeffs:
        return "0"
    return " ".join(_term(v, model.variables[k].name) for k, v in sorted(coeffs.items()))


def dump_lp(model: MilpModel) -> str:
    lines = ["Minimize", f" obj: {_expr(model.objective, model)}"]
    if model.objective_constant:
        lines[-1] += f" {_term(model.objective_constant, '')}".rstrip()
    lines.append("Subject To")
    for i, con in enumerate(model.constraints):
        sense = {"<=": "<=", ">=": ">=", "==": "="}[con.sense]
        lines.append(f" {con.name or f'r{i}'}: {_expr(con.coeffs, model)} {sense} {con.rhs!r}")
    lines.append("Bounds")
    for v in model.variables:
        if v.kind == "continuous":
            lines.append(f" {v.lower!r} <= {v.name} <= {v.upper!r}")
    lines.append("Binaries")
    names = [v.name for v in model.variables if v.kind == "binary"]
    for i in range(0, len(names), 8):
        lines.append(" " + " ".join(names[i:i + 8]))
    for label, groups in (("Groups", model.groups), ("AuxGroups", model.aux_groups)):
        if groups:
            lines.append(f"\\ {label}")
            for g in groups:
                lines.append("\\  " + " ".join(model.variables[k].name for k in g))
    if model.scenarios:
        lines.append("\\ Scenarios")
        lines.append("\\  " + " ".join(model.variables[k].name for k in model.scenarios))
    lines.append("End")
    return "\n".join(lines) + "\n"
