#include "cadence/serialize.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace cadence::ser {

namespace {
constexpr const char* kMagic = "cadence-model";
constexpr const char* kVersion = "v1";
}  // namespace

void write_header(std::ostream& os, const std::string& kind) {
  os << kMagic << ' ' << kind << ' ' << kVersion << '\n';
}

std::string read_header(std::istream& is) {
  const std::string magic = read_token(is, "model magic");
  if (magic != kMagic) {
    throw std::runtime_error("not a model file (bad magic '" + magic + "')");
  }
  const std::string kind = read_token(is, "model kind");
  const std::string version = read_token(is, "model version");
  if (version != kVersion) {
    throw std::runtime_error("unsupported model version '" + version + "'");
  }
  return kind;
}

void expect_header(std::istream& is, const std::string& kind) {
  const std::string got = read_header(is);
  if (got != kind) {
    throw std::runtime_error("expected a '" + kind + "' model, found '" + got +
                             "'");
  }
}

void write_double(std::ostream& os, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  os << buf;
}

void write_u64(std::ostream& os, std::uint64_t v) { os << v; }

void write_vector(std::ostream& os, const Eigen::VectorXd& v) {
  os << v.size();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    os << ' ';
    write_double(os, v(i));
  }
  os << '\n';
}

void write_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
  os << m.rows() << ' ' << m.cols();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      os << ' ';
      write_double(os, m(r, c));
    }
  }
  os << '\n';
}

void write_doubles(std::ostream& os, const std::vector<double>& v) {
  os << v.size();
  for (double x : v) {
    os << ' ';
    write_double(os, x);
  }
  os << '\n';
}

std::string read_token(std::istream& is, const char* what) {
  std::string token;
  if (!(is >> token)) {
    throw std::runtime_error(std::string("model file ended while reading ") +
                             what);
  }
  return token;
}

void expect_token(std::istream& is, const std::string& token) {
  const std::string got = read_token(is, token.c_str());
  if (got != token) {
    throw std::runtime_error("expected token '" + token + "', found '" + got +
                             "'");
  }
}

double read_double(std::istream& is, const char* what) {
  double v = 0;
  if (!(is >> v)) {
    throw std::runtime_error(std::string("bad numeric field: ") + what);
  }
  return v;
}

std::uint64_t read_u64(std::istream& is, const char* what) {
  std::uint64_t v = 0;
  if (!(is >> v)) {
    throw std::runtime_error(std::string("bad integer field: ") + what);
  }
  return v;
}

Eigen::VectorXd read_vector(std::istream& is, const char* what) {
  const auto n = read_u64(is, what);
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = read_double(is, what);
  return v;
}

Eigen::MatrixXd read_matrix(std::istream& is, const char* what) {
  const auto rows = read_u64(is, what);
  const auto cols = read_u64(is, what);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows),
                    static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = read_double(is, what);
    }
  }
  return m;
}

std::vector<double> read_doubles(std::istream& is, const char* what) {
  const auto n = read_u64(is, what);
  std::vector<double> v(n);
  for (auto& x : v) x = read_double(is, what);
  return v;
}

}  // namespace cadence::ser
