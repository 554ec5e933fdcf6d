#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "qbd2d/model.hpp"
#include "qbd2d/types.hpp"

namespace qbd2d {

namespace detail {

inline bool parse_offset(const std::string& s, int& out) {
  if (s == "-1") out = -1;
  else if (s == "0") out = 0;
  else if (s == "1") out = 1;
  else return false;
  return true;
}

inline bool parse_jump_key(const std::string& key, int& i1, int& i2) {
  auto comma = key.find(',');
  if (comma == std::string::npos || key.find(',', comma + 1) != std::string::npos) return false;
  return parse_offset(key.substr(0, comma), i1) && parse_offset(key.substr(comma + 1), i2);
}

inline bool region_from_name(const std::string& s, Region& out) {
  if (s == "empty") out = Region::Origin;
  else if (s == "b1") out = Region::Face1;
  else if (s == "b2") out = Region::Face2;
  else if (s == "interior") out = Region::Interior;
  else return false;
  return true;
}

}  // namespace detail

// Strict schema:
//   { "phases": s0, "blocks": { <region>: { "i,j": [[...]] } } }
// with region in {empty, b1, b2, interior}, i,j in {-1,0,1}, and each block an
// s0 x s0 row-major array of numbers. Any unknown key is an error. Absent
// blocks are zero. No renormalization happens here; validate() judges the
// probabilistic constraints afterwards.
inline BlockSet parse_model(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorCode::ParseError, "model must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "phases" && it.key() != "blocks")
      fail(ErrorCode::ParseError, "unknown top-level key '" + it.key() + "'");
  if (!j.contains("phases") || !j.contains("blocks"))
    fail(ErrorCode::ParseError, "model needs 'phases' and 'blocks'");

  const auto& jp = j.at("phases");
  if (!jp.is_number_integer() || jp.get<long long>() < 1 || jp.get<long long>() > 4096)
    fail(ErrorCode::ParseError, "'phases' must be an integer in [1, 4096]");
  const int s0 = jp.get<int>();

  const auto& jb = j.at("blocks");
  if (!jb.is_object()) fail(ErrorCode::ParseError, "'blocks' must be an object");

  BlockSet bs(s0);
  for (auto it = jb.begin(); it != jb.end(); ++it) {
    Region reg;
    if (!detail::region_from_name(it.key(), reg))
      fail(ErrorCode::ParseError, "unknown region '" + it.key() + "'");
    if (!it.value().is_object())
      fail(ErrorCode::ParseError, "region '" + it.key() + "' must be an object");
    for (auto bt = it.value().begin(); bt != it.value().end(); ++bt) {
      int i1, i2;
      if (!detail::parse_jump_key(bt.key(), i1, i2))
        fail(ErrorCode::ParseError,
             "bad jump key '" + bt.key() + "' in region '" + it.key() + "'");
      const auto& rows = bt.value();
      if (!rows.is_array() || int(rows.size()) != s0)
        fail(ErrorCode::ParseError, "block " + it.key() + "[" + bt.key() + "] must have " +
                                        std::to_string(s0) + " rows");
      Matrix& B = bs.block(reg, i1, i2);
      for (int p = 0; p < s0; ++p) {
        const auto& row = rows.at(size_t(p));
        if (!row.is_array() || int(row.size()) != s0)
          fail(ErrorCode::ParseError, "block " + it.key() + "[" + bt.key() + "] row " +
                                          std::to_string(p) + " must have " +
                                          std::to_string(s0) + " entries");
        for (int q = 0; q < s0; ++q) {
          const auto& cell = row.at(size_t(q));
          if (!cell.is_number())
            fail(ErrorCode::ParseError, "block " + it.key() + "[" + bt.key() +
                                            "] entry (" + std::to_string(p) + "," +
                                            std::to_string(q) + ") must be a number");
          B(p, q) = cell.get<double>();
        }
      }
    }
  }
  return bs;
}

inline BlockSet parse_model(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("invalid JSON: ") + e.what());
  }
  return parse_model(j);
}

inline BlockSet load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ParseError, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

inline nlohmann::json model_to_json(const BlockSet& bs) {
  nlohmann::json j;
  j["phases"] = bs.phases();
  j["blocks"] = nlohmann::json::object();
  for (int r = 0; r < 4; ++r) {
    Region reg = Region(r);
    nlohmann::json jr = nlohmann::json::object();
    for (int i1 = -1; i1 <= 1; ++i1)
      for (int i2 = -1; i2 <= 1; ++i2) {
        const Matrix& B = bs.block(reg, i1, i2);
        if (B.isZero(0.0)) continue;
        nlohmann::json rows = nlohmann::json::array();
        for (int p = 0; p < bs.phases(); ++p) {
          nlohmann::json row = nlohmann::json::array();
          for (int q = 0; q < bs.phases(); ++q) row.push_back(B(p, q));
          rows.push_back(row);
        }
        jr[std::to_string(i1) + "," + std::to_string(i2)] = rows;
      }
    j["blocks"][region_name(reg)] = jr;
  }
  return j;
}

}  // namespace qbd2d
