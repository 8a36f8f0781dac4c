#ifndef MAPDEN_ERRORS_HPP
#define MAPDEN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mapden {

/// Exit-code category an error maps to at the CLI boundary.
/// config -> 2, data -> 3, numerical -> 4.
enum class ErrorKind { config, data, numerical };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

struct DegenerateSignalError : Error {
    explicit DegenerateSignalError(const std::string& what)
        : Error(ErrorKind::data, "degenerate signal: " + what) {}
};

struct InvalidParamsError : Error {
    explicit InvalidParamsError(const std::string& what)
        : Error(ErrorKind::config, "invalid params: " + what) {}
};

struct InsufficientDataError : Error {
    explicit InsufficientDataError(const std::string& what)
        : Error(ErrorKind::data, "insufficient data: " + what) {}
};

struct ParseError : Error {
    ParseError(std::size_t line, const std::string& what)
        : Error(ErrorKind::data, "parse error at line " + std::to_string(line) + ": " + what),
          line(line) {}
    std::size_t line;
};

struct EmptyDatasetError : Error {
    explicit EmptyDatasetError(const std::string& what)
        : Error(ErrorKind::data, "empty dataset: " + what) {}
};

struct NoPreUpstrokeRegionError : Error {
    explicit NoPreUpstrokeRegionError(const std::string& what)
        : Error(ErrorKind::data, "no pre-upstroke region: " + what) {}
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& what)
        : Error(ErrorKind::numerical, "shape mismatch: " + what) {}
};

struct GraphConsumedError : Error {
    explicit GraphConsumedError(const std::string& what)
        : Error(ErrorKind::numerical, "graph consumed: " + what) {}
};

struct NonFiniteError : Error {
    explicit NonFiniteError(const std::string& what)
        : Error(ErrorKind::numerical, "non-finite value: " + what) {}
};

struct InvalidCutoffError : Error {
    explicit InvalidCutoffError(const std::string& what)
        : Error(ErrorKind::config, "invalid cutoff: " + what) {}
};

struct SignalTooShortError : Error {
    explicit SignalTooShortError(const std::string& what)
        : Error(ErrorKind::data, "signal too short: " + what) {}
};

struct CheckpointError : Error {
    explicit CheckpointError(const std::string& what)
        : Error(ErrorKind::data, "checkpoint: " + what) {}
};

struct AlignmentError : Error {
    explicit AlignmentError(const std::string& what)
        : Error(ErrorKind::data, "alignment: " + what) {}
};

} // namespace mapden

#endif
