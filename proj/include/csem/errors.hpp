#pragma once

#include <stdexcept>

namespace csem {

// Base for everything this library throws. The CLI maps these onto exit
// codes: ConfigError -> 1, data/format errors -> 2, TrainError -> 3.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : Error { using Error::Error; };    // tensor dimension mismatch
struct ParseError : Error { using Error::Error; };    // malformed input file
struct DataError : Error { using Error::Error; };     // out-of-range ids, unknown tags/labels
struct IoError : Error { using Error::Error; };       // open/read/write failure
struct FormatError : Error { using Error::Error; };   // model file magic/version/kind
struct CorruptError : Error { using Error::Error; };  // model file CRC/truncation
struct TrainError : Error { using Error::Error; };    // non-finite loss or gradient
struct ConfigError : Error { using Error::Error; };   // bad flag or config key

}  // namespace csem
