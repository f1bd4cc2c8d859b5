"""Report names that are loaded but never bound anywhere in the module.

Prints flake8-style `path:line:col: F821 undefined name 'x'` lines. Scoping is
deliberately coarse (one namespace per module) so the output is stable.
"""
import ast
import builtins
import sys


def bound_names(tree):
    names = set(dir(builtins))
    for node in ast.walk(tree):
        if isinstance(node, ast.Name) and isinstance(node.ctx, (ast.Store, ast.Del)):
            names.add(node.id)
        elif isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef)):
            names.add(node.name)
        elif isinstance(node, ast.arg):
            names.add(node.arg)
        elif isinstance(node, (ast.Import, ast.ImportFrom)):
            for alias in node.names:
                names.add((alias.asname or alias.name).split(".")[0])
        elif isinstance(node, ast.ExceptHandler) and node.name:
            names.add(node.name)
    return names


def main(path):
    with open(path) as fh:
        tree = ast.parse(fh.read(), path)
    bound = bound_names(tree)
    seen = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.Name) and isinstance(node.ctx, ast.Load) and node.id not in bound:
            key = (node.lineno, node.col_offset, node.id)
            if key not in seen:
                seen.add(key)
    for line, col, name in sorted(seen):
        print(f"{path}:{line}:{col + 1}: F821 undefined name '{name}'")


if __name__ == "__main__":
    main(sys.argv[1])
