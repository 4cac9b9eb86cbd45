"""Confidence scores for language model responses.

Thin re-export of the compiled extension. The extension lives inside this
package in installed builds and next to it on the build-tree import path
used by the test suite.
"""

try:
    from ._uqkit import *  # noqa: F401,F403
    from ._uqkit import __doc__ as _extension_doc
except ImportError:
    from _uqkit import *  # noqa: F401,F403
    from _uqkit import __doc__ as _extension_doc

__doc__ = _extension_doc or __doc__
