"""Co-writing fidelity suite.

Judges assistant completions the way a co-writing human would (ordered
acceptance checklist, knowledge-aware edit cost), runs human-in-the-loop
co-writing sessions across four interaction paradigms, evaluates paradigms in
batch over query corpora, and exposes the whole thing over HTTP and a CLI.
"""

__version__ = "0.1.0"
