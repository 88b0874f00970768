# Configuration file for the Sphinx documentation builder.
import os
import sys

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..", "..", "src", "python")))

from frechet_forest import __version__  # noqa: E402

# -- Project information -----------------------------------------------------
project = "frechet-forest"
copyright = "2026, frechet-forest developers"
author = "frechet-forest developers"
version = __version__
release = __version__

# -- General configuration ---------------------------------------------------
extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.mathjax",
    "sphinx.ext.napoleon",
    "sphinx.ext.viewcode",
    "sphinxcontrib.bibtex",
]
bibtex_bibfiles = ["references.bib"]
autodoc_member_order = "bysource"
templates_path = ["_templates"]
exclude_patterns = ["_build", "*.txt"]
rst_prolog = f".. |project| replace:: {project}\n.. |version| replace:: {version}\n"
with open(os.path.join(os.path.dirname(__file__), "targets.txt")) as f:
    rst_epilog = f.read()

# -- Options for HTML output -------------------------------------------------
html_theme = "sphinx_rtd_theme"
html_static_path = []
