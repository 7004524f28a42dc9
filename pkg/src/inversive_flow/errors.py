"""Error type shared by every module.

Each failure carries a short machine-readable ``code`` (for example
``"INADMISSIBLE"``) so the command-line front end can report it verbatim.
"""


class InversiveError(Exception):
    def __init__(self, code, message=""):
        self.code = code
        self.message = message
        super().__init__(f"{code}: {message}" if message else code)
