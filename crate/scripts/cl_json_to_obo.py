#!/usr/bin/env python3
"""Convert a cellxgene-ontology-guide CL JSON dump (.json.zst) into OBO 1.2.

Direct parents are the ancestors at distance 1. Usage:
    cl_json_to_obo.py CL-ontology-vYYYY-MM-DD.json.zst out.obo
"""
import io
import json
import re
import sys

import zstandard


def quote(s):
    return s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", " ")


def main(src, dst):
    with open(src, "rb") as fh:
        reader = zstandard.ZstdDecompressor().stream_reader(fh)
        terms = json.load(io.TextIOWrapper(reader, encoding="utf-8"))
    version = re.search(r"v(\d{4}-\d{2}-\d{2})", src)
    with open(dst, "w", encoding="utf-8") as out:
        out.write("format-version: 1.2\n")
        if version:
            out.write(f"data-version: cl/releases/{version.group(1)}/cl-basic.owl\n")
        out.write("ontology: cl\n")
        for tid in sorted(terms):
            t = terms[tid]
            out.write(f"\n[Term]\nid: {tid}\n")
            if t.get("label"):
                out.write(f"name: {t['label']}\n")
            if t.get("description"):
                out.write(f"def: \"{quote(t['description'])}\" []\n")
            for syn in t.get("synonyms", []):
                out.write(f"synonym: \"{quote(syn)}\" EXACT []\n")
            parents = sorted(a for a, d in t["ancestors"].items() if d == 1)
            for p in parents:
                out.write(f"is_a: {p} ! {terms[p]['label']}\n")
            if t.get("deprecated"):
                out.write("is_obsolete: true\n")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
