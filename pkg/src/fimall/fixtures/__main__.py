"""Regenerate the proof fixtures next to this package."""

from . import write_fixtures

for path in write_fixtures():
    print(path)
