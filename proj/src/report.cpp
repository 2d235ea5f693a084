#include "fixpoint/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fixpoint {

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) throw std::runtime_error("format_number: conversion failed");
  return std::string(buf, end);
}

namespace {
std::string optional_number(const std::optional<double>& x) { return x ? format_number(*x) : ""; }
}  // namespace

std::string trace_csv(const IterationTrace& trace, const std::vector<BanachBoundRecord>* bounds) {
  std::ostringstream out;
  out << "iter,step_norm,residual,apriori_bound,aposteriori_bound,actual_error\n";
  const std::size_t rows = bounds ? bounds->size() : trace.steps.size();
  for (std::size_t n = 0; n < rows; ++n) {
    out << n << ',';
    if (n < trace.steps.size())
      out << format_number(trace.steps[n].step_norm) << ',' << format_number(trace.steps[n].residual);
    else
      out << ',';
    out << ',';
    if (bounds) {
      const auto& b = (*bounds)[n];
      out << format_number(b.apriori_bound) << ',' << optional_number(b.aposteriori_bound) << ','
          << optional_number(b.actual_error);
    } else {
      out << ",";
    }
    out << '\n';
  }
  return out.str();
}

nlohmann::json to_json(const LipschitzEstimate& est) {
  return {{"method", to_string(est.method)},
          {"value", est.value},
          {"samples", est.samples},
          {"seed", est.seed},
          {"is_upper_bound", est.is_upper_bound}};
}

nlohmann::json to_json(const GnnLipschitzReport& report) {
  return {{"L", report.L},
          {"coefficients", report.coefficients},
          {"alpha_max", report.alpha_max},
          {"product", report.product},
          {"certified", report.certified}};
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << contents;
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

}  // namespace fixpoint
