from . import build_requests
from . import tiny_tables
