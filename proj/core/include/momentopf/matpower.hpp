#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "momentopf/network.hpp"

namespace mopf {

struct ParseError : std::runtime_error {
  ParseError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line(line) {}
  int line;
};

struct UnsupportedFeatureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Parses a MATPOWER version-2 case struct (bus/gen/branch/gencost
// tables).  Out-of-service units and isolated buses are dropped with a
// note; unsupported cost models raise UnsupportedFeatureError.  The
// result is validated before it is returned.
NetworkCase parse_matpower_case(std::string_view text, std::string_view case_name = "");

// Emits a case function in the same format; parsing the output yields
// an identical NetworkCase.
std::string write_matpower_case(const NetworkCase& nc);

// Canonical JSON serialization (field order fixed, numbers round-trip
// exactly); from_json(to_json(c)) == c.
std::string case_to_json(const NetworkCase& nc);
NetworkCase case_from_json(const std::string& text);

// Loads .m or .json by extension.
NetworkCase load_case_file(const std::string& path);

}  // namespace mopf
