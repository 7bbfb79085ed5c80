#pragma once

#include <stdexcept>
#include <string>

namespace fwq {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input / domain errors.
class InvalidBitWidth : public Error { public: using Error::Error; };
class InvalidScale    : public Error { public: using Error::Error; };
class OutOfRange      : public Error { public: using Error::Error; };
class InvalidInput    : public Error { public: using Error::Error; };
class ZeroRate        : public Error { public: using Error::Error; };
class ConfigError     : public Error { public: using Error::Error; };

// Optimizer infeasibility family; catchable as a group.
class Infeasible : public Error { public: using Error::Error; };
class DeadlineInfeasible   : public Infeasible { public: using Infeasible::Infeasible; };
class BandwidthInfeasible  : public Infeasible { public: using Infeasible::Infeasible; };
class QuantErrorInfeasible : public Infeasible { public: using Infeasible::Infeasible; };

class InvalidMultiplier : public Error { public: using Error::Error; };
class UnderdeterminedFit : public Error { public: using Error::Error; };

// Simulation errors.
class DivergenceError : public Error { public: using Error::Error; };
class PartitionError  : public Error { public: using Error::Error; };
class DimensionMismatch : public Error { public: using Error::Error; };

}  // namespace fwq
