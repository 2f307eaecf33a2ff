# exception classes


class CurriplanError(Exception):
    def __init__(self, msg):
        Exception.__init__(self, msg)
        self.msg = msg

    def __str__(self):
        return str(self.msg)


class ConfigError(CurriplanError):
    def __init__(self, msg):
        CurriplanError.__init__(self, msg)


# bad input data. 'line' is the 1-based line number in the source file
# and 'sliceId' the record the problem was found in, when known.
class ValidationError(CurriplanError):
    def __init__(self, msg, line=None, sliceId=None):
        self.line = line
        self.sliceId = sliceId

        prefix = ""
        if line is not None:
            prefix += "line %d: " % line
        if sliceId is not None:
            prefix += "slice '%s': " % sliceId

        CurriplanError.__init__(self, prefix + msg)


# reading / writing files and documents
class ArtifactError(CurriplanError):
    def __init__(self, msg):
        CurriplanError.__init__(self, msg)


class UsageError(CurriplanError):
    def __init__(self, msg):
        CurriplanError.__init__(self, msg)
