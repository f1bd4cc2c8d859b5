def remove_na(values):
    """Drop missing entries."""
    return [v for v in values if v is not None]


def to_float(values):
    return [float(v) for v in values]
