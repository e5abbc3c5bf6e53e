"""Validates JSON documents against the schemas in docs/.

usage: validate_json.py SCHEMA_DIR SCHEMA_NAME FILE... [--last-line FILE...]
Files after --last-line are validated on their final line only.
"""
import json
import pathlib
import sys

import jsonschema
from referencing import Registry, Resource


def registry(schema_dir):
    resources = []
    for p in pathlib.Path(schema_dir).glob("*.schema.json"):
        resources.append((p.name, Resource.from_contents(json.loads(p.read_text()))))
    return Registry().with_resources(resources)


def main(argv):
    schema_dir, name, *files = argv
    reg = registry(schema_dir)
    schema = json.loads((pathlib.Path(schema_dir) / name).read_text())
    validator = jsonschema.Draft7Validator(schema, registry=reg)
    last_line = False
    failed = 0
    for f in files:
        if f == "--last-line":
            last_line = True
            continue
        text = pathlib.Path(f).read_text()
        if last_line:
            text = text.strip().splitlines()[-1]
        errors = sorted(validator.iter_errors(json.loads(text)), key=lambda e: list(e.path))
        for e in errors:
            print(f"{f}: {'/'.join(map(str, e.path))}: {e.message}")
        failed += bool(errors)
        if not errors:
            print(f"{f}: valid")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
