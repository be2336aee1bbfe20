#pragma once

#include <stdexcept>
#include <string>

namespace bookcell {

/// Base of every error the library throws.
class Error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

class InvalidSymbolError : public Error
{
  public:
    using Error::Error;
};

class MalformedGenomeError : public Error
{
  public:
    using Error::Error;
};

class EncodingError : public Error
{
  public:
    using Error::Error;
};

class ShapeError : public Error
{
  public:
    using Error::Error;
};

class CapacityError : public Error
{
  public:
    using Error::Error;
};

class TimestepError : public Error
{
  public:
    using Error::Error;
};

class SingularityError : public Error
{
  public:
    using Error::Error;
};

/// E-infinity is undefined without incoming light.
class NoLightError : public Error
{
  public:
    using Error::Error;
};

class NumericBlowupError : public Error
{
  public:
    NumericBlowupError(const std::string& what, long long step = -1)
        : Error(what), step_(step)
    {
    }
    long long step() const noexcept { return step_; }

  private:
    long long step_;
};

class ConfigError : public Error
{
  public:
    using Error::Error;
};

class SnapshotError : public Error
{
  public:
    using Error::Error;
};

} // namespace bookcell
