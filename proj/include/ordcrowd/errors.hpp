#ifndef ORDCROWD_ERRORS_HPP
#define ORDCROWD_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ordcrowd {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// dataset

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    explicit ParseError(const std::string& what) : Error(what), line_(0) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class DuplicateRating : public Error {
public:
    using Error::Error;
};

class InvalidLevel : public Error {
public:
    using Error::Error;
};

class InvalidScale : public Error {
public:
    using Error::Error;
};

class IncompleteCategoryMap : public Error {
public:
    using Error::Error;
};

class UnknownInstance : public Error {
public:
    using Error::Error;
};

class NoRatings : public Error {
public:
    using Error::Error;
};

// numerics

class InvalidVariance : public Error {
public:
    using Error::Error;
};

class InvalidInterval : public Error {
public:
    using Error::Error;
};

/// Gaussian mass of the interval is not representable; callers fall back to
/// a uniform approximation over the interval.
class DegenerateMass : public Error {
public:
    using Error::Error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

class InvalidStart : public Error {
public:
    using Error::Error;
};

// models

class NumericalFailure : public Error {
public:
    NumericalFailure(const std::string& what, std::size_t annotator, std::size_t instance)
        : Error(what + " (annotator " + std::to_string(annotator) + ", instance " +
                std::to_string(instance) + ")"),
          annotator_(annotator), instance_(instance) {}
    explicit NumericalFailure(const std::string& what)
        : Error(what), annotator_(npos), instance_(npos) {}

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::size_t annotator() const noexcept { return annotator_; }
    std::size_t instance() const noexcept { return instance_; }

private:
    std::size_t annotator_;
    std::size_t instance_;
};

class FitFailed : public Error {
public:
    using Error::Error;
};

class InvalidCode : public Error {
public:
    using Error::Error;
};

class UndefinedCorrelation : public Error {
public:
    using Error::Error;
};

} // namespace ordcrowd

#endif // ORDCROWD_ERRORS_HPP
