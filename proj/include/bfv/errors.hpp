#pragma once

#include <stdexcept>
#include <string>

namespace bfv {

// Base for every error raised by the library. Subclasses map onto the
// error categories the CLI reports.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error { public: using Error::Error; };
class NumericError : public Error { public: using Error::Error; };
class ContractError : public Error { public: using Error::Error; };
class FormatError : public Error { public: using Error::Error; };
class LengthError : public Error { public: using Error::Error; };
class DataError : public Error { public: using Error::Error; };
class AlignmentError : public Error { public: using Error::Error; };
class TrainingError : public Error { public: using Error::Error; };
class InternalError : public Error { public: using Error::Error; };

} // namespace bfv
