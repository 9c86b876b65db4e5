#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace cadence::ser {

// Model files are whitespace-separated text. Doubles are printed with 17
// significant digits so save/load round-trips bit-exactly. Every file opens
// with "cadence-model <kind> v1".

void write_header(std::ostream& os, const std::string& kind);

// Reads and validates the magic + version, returning the kind token.
std::string read_header(std::istream& is);

// As above but also requires the kind to match.
void expect_header(std::istream& is, const std::string& kind);

void write_double(std::ostream& os, double v);
void write_u64(std::ostream& os, std::uint64_t v);
void write_vector(std::ostream& os, const Eigen::VectorXd& v);
void write_matrix(std::ostream& os, const Eigen::MatrixXd& m);
void write_doubles(std::ostream& os, const std::vector<double>& v);

std::string read_token(std::istream& is, const char* what);
void expect_token(std::istream& is, const std::string& token);
double read_double(std::istream& is, const char* what);
std::uint64_t read_u64(std::istream& is, const char* what);
Eigen::VectorXd read_vector(std::istream& is, const char* what);
Eigen::MatrixXd read_matrix(std::istream& is, const char* what);
std::vector<double> read_doubles(std::istream& is, const char* what);

}  // namespace cadence::ser
