TRUE_WORDS = ("1", "true", "on")
FALSE_WORDS = ("0", "false", "off")


def parse_bool(value):
    """Interpret a config string as a boolean."""
    if value in TRUE_WORDS:
        return True
    if value in FALSE_WORDS:
        return False
    raise ValueError(f"not a boolean: {value!r}")


def parse_int(value):
    return int(value.strip())
