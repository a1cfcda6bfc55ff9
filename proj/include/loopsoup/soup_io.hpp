#pragma once

// Text serialization of loop soups: one JSON header line followed by one
// record `time,v1;v2;...;vk` per loop. Times use the shortest decimal form
// that round-trips, so write/read is bit-exact.

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>

#include <json.hpp>

#include "loopsoup/loop_measure.hpp"

namespace loopsoup {

class SoupFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void append_double(std::string& out, double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, res.ptr);
}

template <class T>
T parse_number(std::string_view text, std::size_t line) {
  T value{};
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last) {
    throw SoupFormatError("line " + std::to_string(line) + ": malformed number '" +
                          std::string(text) + "'");
  }
  return value;
}

}  // namespace detail

inline nlohmann::json soup_header(const LoopSoup& soup) {
  return nlohmann::json{{"n", soup.params().n},
                        {"epsilon", soup.params().epsilon},
                        {"horizon", soup.horizon()},
                        {"seed", soup.seed()},
                        {"stream", soup.stream()},
                        {"generator_id", soup.generator_id()},
                        {"loops", soup.size()}};
}

inline void write_soup(std::ostream& os, const LoopSoup& soup) {
  os << soup_header(soup).dump() << '\n';
  std::string line;
  for (std::size_t i = 0; i < soup.size(); ++i) {
    line.clear();
    detail::append_double(line, soup.time(i));
    line.push_back(',');
    bool first = true;
    for (Vertex v : soup.loop(i)) {
      if (!first) line.push_back(';');
      first = false;
      line += std::to_string(v);
    }
    line.push_back('\n');
    os << line;
  }
}

inline LoopSoup read_soup(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw SoupFormatError("missing header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw SoupFormatError(std::string("header is not valid JSON: ") + e.what());
  }
  for (const char* key : {"n", "epsilon", "horizon", "seed", "generator_id"}) {
    if (!header.contains(key)) throw SoupFormatError(std::string("header lacks field ") + key);
  }
  const ModelParams params(header.at("n").get<std::int64_t>(),
                           header.at("epsilon").get<double>());
  std::vector<double> times;
  std::vector<std::uint32_t> offsets{0};
  std::vector<Vertex> vertices;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw SoupFormatError("line " + std::to_string(lineno) + ": expected 'time,v1;v2;...'");
    }
    const std::string_view view(line);
    times.push_back(detail::parse_number<double>(view.substr(0, comma), lineno));
    std::string_view rest = view.substr(comma + 1);
    const std::size_t begin = vertices.size();
    while (!rest.empty()) {
      const auto semi = rest.find(';');
      const auto token = rest.substr(0, semi);
      vertices.push_back(detail::parse_number<Vertex>(token, lineno));
      if (semi == std::string_view::npos) break;
      rest.remove_prefix(semi + 1);
    }
    if (vertices.size() - begin < 2) {
      throw SoupFormatError("line " + std::to_string(lineno) + ": loop shorter than 2");
    }
    offsets.push_back(static_cast<std::uint32_t>(vertices.size()));
  }
  if (header.contains("loops") && header.at("loops").get<std::size_t>() != times.size()) {
    throw SoupFormatError("loop count does not match header");
  }
  try {
    return LoopSoup(params, header.at("horizon").get<double>(),
                    header.at("seed").get<std::uint64_t>(),
                    header.value("stream", std::uint64_t{0}),
                    header.at("generator_id").get<std::string>(), std::move(times),
                    std::move(offsets), std::move(vertices));
  } catch (const DomainError& e) {
    throw SoupFormatError(e.what());
  }
}

inline std::string soup_to_string(const LoopSoup& soup) {
  std::ostringstream os;
  write_soup(os, soup);
  return os.str();
}

inline LoopSoup soup_from_string(const std::string& text) {
  std::istringstream is(text);
  return read_soup(is);
}

}  // namespace loopsoup
