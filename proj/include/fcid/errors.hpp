#pragma once

#include <stdexcept>
#include <string>

namespace fcid {

// All library failures derive from Error so callers can report them uniformly.
// The concrete type names the failure category.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class ValueError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class UnsupportedFormatError : public FormatError {
public:
    using FormatError::FormatError;
};

class UnsupportedDatatypeError : public FormatError {
public:
    using FormatError::FormatError;
};

// Pairing or session structure violated.
class StructuralError : public Error {
public:
    using Error::Error;
};

// Constant signals, empty cells, failed factorizations.
class DegenerateError : public Error {
public:
    using Error::Error;
};

// Operation applied to a value in the wrong processing state (e.g. thresholded twice).
class StateError : public Error {
public:
    using Error::Error;
};

class SizeError : public Error {
public:
    using Error::Error;
};

class ManifestError : public Error {
public:
    using Error::Error;
};

}  // namespace fcid
