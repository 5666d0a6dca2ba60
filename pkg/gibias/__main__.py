# pygibias/gibias/__main__.py
# Copyright (C) 2025-2026 The pygibias developers
# SPDX-License-Identifier: LGPL-3.0-or-later

import sys

from .cli import main

sys.exit(main())
