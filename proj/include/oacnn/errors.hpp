#pragma once
#include <stdexcept>
#include <string>

namespace oacnn {

// Error taxonomy. The CLI maps these onto process exit codes:
// verification failure 1, usage/config 2, IO 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptyInput : Error { using Error::Error; };
struct InvalidGeometry : Error { using Error::Error; };
struct CoordOverflow : Error { using Error::Error; };
struct InvalidGridSize : Error { using Error::Error; };
struct DuplicateVoxel : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };
struct TopologyError : Error { using Error::Error; };
struct NumericError : Error { using Error::Error; };
struct LabelError : Error { using Error::Error; };
struct TapeError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct CompatError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct ParseError : IoError { using IoError::IoError; };

} // namespace oacnn
