import os
import sys

# ctest points this at the in-tree module; an editable install would otherwise shadow it
_build = os.environ.get("OHTLAB_PYTHON_BUILD")
if _build:
    sys.meta_path[:] = [f for f in sys.meta_path if "ohtlab" not in type(f).__module__]
    sys.path.insert(0, _build)
