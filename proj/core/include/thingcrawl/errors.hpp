#pragma once

#include <stdexcept>
#include <string>

namespace thingcrawl {

// Base for all operational errors raised by the library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// geo / grid
class InvalidRegion : public Error { public: using Error::Error; };
class InvalidMargin : public Error { public: using Error::Error; };
class DimensionMismatch : public Error { public: using Error::Error; };

// source-adapter
class SourceUnreachable : public Error { public: using Error::Error; };
class AuthRejected : public Error { public: using Error::Error; };
class ProtocolError : public Error { public: using Error::Error; };
class DepthExceeded : public Error { public: using Error::Error; };
class InsufficientSamples : public Error { public: using Error::Error; };

// crawl-pipeline
class AllSourcesFailed : public Error { public: using Error::Error; };
class UnknownEnricher : public Error { public: using Error::Error; };
class StoreFailure : public Error { public: using Error::Error; };

// snapshot-store
class OutOfOrderRound : public Error { public: using Error::Error; };
class IoFailure : public Error { public: using Error::Error; };
class UnknownRound : public Error { public: using Error::Error; };

// analytics
class EmptyDistribution : public Error { public: using Error::Error; };
class GridTooLarge : public Error { public: using Error::Error; };
class OrderViolation : public Error { public: using Error::Error; };
class BadCategoryMap : public Error { public: using Error::Error; };

// world-sim
class AddressInUse : public Error { public: using Error::Error; };

// config
class ConfigError : public Error { public: using Error::Error; };

}  // namespace thingcrawl
