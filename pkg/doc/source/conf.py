# Configuration file for the Sphinx documentation builder.
# https://www.sphinx-doc.org/en/master/usage/configuration.html

import os
import sys

# The package lives below python/ and is documented from source.
sys.path.insert(0, os.path.abspath(os.path.join("..", "..", "python")))

project = "photon-shaper"
copyright = "2026, photon-shaper developers"
author = "photon-shaper developers"
release = "0.1.0"

extensions = ["sphinx.ext.autodoc", "sphinx.ext.viewcode"]
# Signatures read better without the numpy and pydantic internals.
autodoc_typehints = "description"

templates_path = ["_templates"]
exclude_patterns = []

html_theme = "sphinx_rtd_theme"
