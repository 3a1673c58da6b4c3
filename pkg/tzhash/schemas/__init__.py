# Schemas package
from .config import *
from .metrics import *
from .search import *
