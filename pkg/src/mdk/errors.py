"""Engine error hierarchy.

Every error carries a stable machine code (mirrored 1:1 by the HTTP API) and
an HTTP status used when the error crosses the service boundary.
"""


class MdkError(Exception):
    code = "internal-error"
    http_status = 500

    def __init__(self, message="", detail=None):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__
        self.detail = detail


class ParseError(MdkError):
    code = "parse-error"
    http_status = 400

    def __init__(self, message, line=None, column=None, expected=None):
        super().__init__(message, detail={"line": line, "column": column, "expected": expected})
        self.line = line
        self.column = column
        self.expected = expected or []


class SchemaError(MdkError):
    code = "schema-error"
    http_status = 400


class SchemaMismatch(MdkError):
    code = "schema-mismatch"
    http_status = 400


class UnknownClass(MdkError):
    code = "unknown-class"
    http_status = 400


class UnknownCatalog(MdkError):
    code = "unknown-catalog"
    http_status = 400


class UnknownRelation(MdkError):
    code = "unknown-relation"
    http_status = 400


class UnknownItem(MdkError):
    code = "unknown-item"
    http_status = 404


class UnknownSession(MdkError):
    code = "unknown-session"
    http_status = 404


class UnknownPage(MdkError):
    code = "unknown-page"
    http_status = 400


class ClassMismatch(MdkError):
    code = "class-mismatch"
    http_status = 400


class SourceUnavailable(MdkError):
    code = "source-unavailable"
    http_status = 502

    def __init__(self, message, source=None, elapsed_s=None):
        super().__init__(message, detail={"source": source, "elapsedS": elapsed_s})
        self.source = source
        self.elapsed_s = elapsed_s


class NotFound(MdkError):
    code = "not-found"
    http_status = 404


class MalformedId(MdkError):
    code = "malformed-id"
    http_status = 400


class InvalidDoi(MdkError):
    code = "invalid-doi"
    http_status = 400


class VersionMismatch(MdkError):
    code = "version-mismatch"
    http_status = 409


class EmptySession(MdkError):
    code = "empty-session"
    http_status = 400


class ValidationGate(MdkError):
    code = "validation-gate"
    http_status = 409


class MissingPredicateMapping(MdkError):
    code = "missing-predicate-mapping"
    http_status = 400


class SinkMismatch(MdkError):
    code = "sink-mismatch"
    http_status = 400


class AuthFailed(MdkError):
    code = "auth-failed"
    http_status = 401


class SinkError(MdkError):
    code = "sink-error"
    http_status = 502

    def __init__(self, message, op_index=None, sink_message=None):
        super().__init__(message, detail={"opIndex": op_index, "sinkMessage": sink_message})
        self.op_index = op_index
        self.sink_message = sink_message


class PartialExport(MdkError):
    code = "partial-export"
    http_status = 502

    def __init__(self, message, receipt=None, resume=None):
        super().__init__(message)
        self.receipt = receipt
        self.resume = resume


class ExportInProgress(MdkError):
    code = "export-in-progress"
    http_status = 409


class ReceiptMismatch(MdkError):
    code = "receipt-mismatch"
    http_status = 400


class FormMismatch(MdkError):
    code = "form-mismatch"
    http_status = 400


class QueryRejected(MdkError):
    code = "query-rejected"
    http_status = 502


class InvalidFilter(MdkError):
    code = "invalid-filter"
    http_status = 400


class AllSourcesUnavailable(MdkError):
    code = "all-sources-unavailable"
    http_status = 502


class BindError(MdkError):
    code = "bind-error"
    http_status = 500


class ConfigError(MdkError):
    code = "config-error"
    http_status = 500


# Stable public contract: the set of codes the HTTP API may emit.
ERROR_CODES = sorted(
    cls.code
    for cls in list(globals().values())
    if isinstance(cls, type) and issubclass(cls, MdkError)
)
