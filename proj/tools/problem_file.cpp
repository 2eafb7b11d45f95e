#include "problem_file.hpp"

#include <cstdint>
#include <optional>

#include <nlohmann/json.hpp>

#include "artifacts.hpp"
#include "cli.hpp"
#include "dlqr/problems.hpp"

namespace dlqr::cli {

namespace {

using nlohmann::json;

std::string quoted(const std::string& key) { return "\"" + key + "\""; }

Matrix read_matrix(const json& value, const std::string& where) {
  if (!value.is_array() || value.empty()) {
    throw InputError(where + " must be a non-empty array of rows");
  }
  const std::size_t cols = value.front().is_array() ? value.front().size() : 0;
  if (cols == 0) throw InputError(where + " row 0 must be a non-empty array of numbers");
  Matrix m(static_cast<Eigen::Index>(value.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < value.size(); ++i) {
    const json& row = value[i];
    if (!row.is_array() || row.size() != cols) {
      throw InputError(where + " row " + std::to_string(i) + " must have " +
                       std::to_string(cols) + " entries");
    }
    for (std::size_t j = 0; j < cols; ++j) {
      if (!row[j].is_number()) {
        throw InputError(where + " row " + std::to_string(i) + " entry " + std::to_string(j) +
                         " is not a number");
      }
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j].get<double>();
    }
  }
  return m;
}

Matrix required(const json& doc, const std::string& key) {
  if (!doc.contains(key)) throw InputError("problem file: missing key " + quoted(key));
  return read_matrix(doc.at(key), "problem file: key " + quoted(key));
}

std::optional<Matrix> optional_matrix(const json& doc, const std::string& key) {
  if (!doc.contains(key)) return std::nullopt;
  return read_matrix(doc.at(key), "problem file: key " + quoted(key));
}

void expect_shape(const Matrix& m, const std::string& key, Eigen::Index rows, Eigen::Index cols) {
  if (m.rows() != rows || m.cols() != cols) {
    throw InputError("problem file: key " + quoted(key) + " is " + std::to_string(m.rows()) +
                     "x" + std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
}

json parse_json(std::string_view text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(what + ": malformed JSON: " + e.what());
  }
}

void hash_bytes(std::uint64_t& h, std::string_view bytes) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
}

void hash_matrix(std::uint64_t& h, const std::string& key, const Matrix& m) {
  hash_bytes(h, key + ":" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ":");
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) hash_bytes(h, format_double(m(i, j)) + ",");
  }
  hash_bytes(h, ";");
}

LoadedProblem finish(std::string name, ProblemInstance prob) {
  std::string hash = problem_hash(prob);
  return LoadedProblem{std::move(name), std::move(prob), std::move(hash)};
}

}  // namespace

std::string problem_hash(const ProblemInstance& prob) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  hash_matrix(h, "A", prob.A());
  hash_matrix(h, "B", prob.B());
  hash_matrix(h, "Q", prob.Q().dense());
  hash_matrix(h, "R", prob.R().dense());
  if (prob.C()) hash_matrix(h, "C", *prob.C());
  if (prob.D()) hash_matrix(h, "D", *prob.D());
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int k = 15; k >= 0; --k, h >>= 4) out[static_cast<std::size_t>(k)] = digits[h & 0xf];
  return out;
}

LoadedProblem parse_problem(std::string_view json_text, const std::string& default_name) {
  const json doc = parse_json(json_text, "problem file");
  if (!doc.is_object()) throw InputError("problem file: top level must be a JSON object");

  const Matrix A = required(doc, "A");
  const Eigen::Index n = A.rows();
  expect_shape(A, "A", n, n);
  const Matrix B = required(doc, "B");
  const Eigen::Index m = B.cols();
  expect_shape(B, "B", n, m);
  const Matrix Q = required(doc, "Q");
  expect_shape(Q, "Q", n, n);
  const Matrix R = required(doc, "R");
  expect_shape(R, "R", m, m);
  const std::optional<Matrix> C = optional_matrix(doc, "C");
  const std::optional<Matrix> D = optional_matrix(doc, "D");
  if (C.has_value() != D.has_value()) {
    throw InputError(std::string("problem file: key ") + (C ? "\"D\"" : "\"C\"") +
                     " is required when the other factor is given");
  }
  if (C) {
    expect_shape(*C, "C", C->rows(), n);
    expect_shape(*D, "D", C->rows(), m);
  }
  std::string name = default_name;
  if (doc.contains("name")) {
    if (!doc.at("name").is_string()) throw InputError("problem file: key \"name\" must be a string");
    name = doc.at("name").get<std::string>();
  }
  return finish(std::move(name), ProblemInstance(A, B, Q, R, C, D));
}

LoadedProblem load_problem(const std::string& source) {
  if (source == "example1") return finish("example1", problems::example1());
  if (source == "scalar") return finish("scalar", problems::scalar_unit());
  return parse_problem(read_text_file(source), std::filesystem::path(source).stem().string());
}

Matrix parse_gain(std::string_view json_text) {
  const json doc = parse_json(json_text, "k0 file");
  if (doc.is_object()) {
    if (!doc.contains("K")) throw InputError("k0 file: missing key \"K\"");
    return read_matrix(doc.at("K"), "k0 file: key \"K\"");
  }
  return read_matrix(doc, "k0 file");
}

}  // namespace dlqr::cli
