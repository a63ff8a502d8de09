#pragma once

#include <stdexcept>
#include <string>

namespace fracmanifold {

// Base of every error thrown by the library. The CLI maps ValidationError to
// exit status 2 and every other Error to 3.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class NonConvergence : public Error {
public:
    using Error::Error;
};

// Result magnitude is not representable in double precision.
class Overflow : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class NotHyperbolic : public Error {
public:
    using Error::Error;
};

class IllConditioned : public Error {
public:
    using Error::Error;
};

class Unbounded : public Error {
public:
    using Error::Error;
};

class NoValidRadius : public Error {
public:
    using Error::Error;
};

class NoConvergence : public Error {
public:
    using Error::Error;
};

class StepOverflow : public Error {
public:
    StepOverflow(const std::string& what, int step, double time)
        : Error(what), step_(step), time_(time) {}
    int step() const noexcept { return step_; }
    double time() const noexcept { return time_; }

private:
    int step_;
    double time_;
};

}  // namespace fracmanifold
