#pragma once

#include <stdexcept>
#include <string>

namespace speakbox {

// Base for everything thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// File could not be opened/read/written. CLI maps this to exit code 2.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

// Input parsed but violates the format contract. CLI maps this to exit code 1.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& msg) : Error(msg) {}
};

// A phrase with no embeddable token and no exact vocabulary match.
class UnknownPhraseError : public ValidationError {
public:
    explicit UnknownPhraseError(const std::string& msg) : ValidationError(msg) {}
};

}  // namespace speakbox
