// Copyright (c) the gustrom project contributors.
// SPDX-License-Identifier: Apache-2.0

#include "gustrom/rom_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "gustrom/errors.hpp"

namespace gustrom {
namespace {

// Container layout, version 1. All integers are little endian; doubles are
// raw IEEE-754 bit patterns, so save/load round trips are bit identical.
//
//   magic    8 bytes   "gustrom\n"
//   version  u32       1
//   sections           tag (4 ASCII bytes), payload length (u64), payload
//   trailer            tag "HASH", length 8, FNV-1a 64 of the section bytes
//
// Sections (strings are u64 length + bytes):
//   DESC  model name, state/disturbance/control counts, state labels
//   BASE  expansion point w0, held controls u_c
//   META  expansion order, Jacobian fd step, coefficient probe reports
//   MODE  per-mode kind/partner/representative/tag/reason, then warnings
//   EIGL  eigenvalues, representative modes only, (re, im) pairs
//   PHIM  right eigenvectors, representative columns, column major
//   PSIM  left eigenvectors, representative columns, column major
//   BGFU  full-order gust input matrix, column major
//   BGRD  reduced gust input, one row per representative mode
//   TEND  quadratic tensor, representative k-slices, order >= 2 only
//   TENE  cubic tensor, representative k-slices, order == 3 only
//
// Conjugate-partner columns and rows are never stored: load rebuilds them
// with complete_conjugate_rows, which is exact because conjugation only
// flips sign bits. That halves the eigenvector and tensor payloads.

constexpr char kMagic[8] = {'g', 'u', 's', 't', 'r', 'o', 'm', '\n'};
constexpr std::uint32_t kVersion = 1;
constexpr size_t kHeaderSize = 12;        // magic + version
constexpr double kLoadBiorthoTol = 1e-10; // matches BasisOptions::biortho_tol

std::uint64_t fnv1a64(const std::uint8_t* data, size_t size) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (size_t i = 0; i < size; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Payload {
public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
      buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i)
      buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void cplx(const Complex& v) {
    f64(v.real());
    f64(v.imag());
  }
  void str(const std::string& s) {
    u64(s.size());
    buf_.insert(buf_.end(), s.begin(), s.end());
  }
  const std::vector<std::uint8_t>& bytes() const { return buf_; }

private:
  std::vector<std::uint8_t> buf_;
};

void append_section(std::vector<std::uint8_t>& out, const char (&tag)[5], const Payload& p) {
  out.insert(out.end(), tag, tag + 4);
  const std::uint64_t len = p.bytes().size();
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
  out.insert(out.end(), p.bytes().begin(), p.bytes().end());
}

// Bounds-checked reader over one section payload.
class Cursor {
public:
  Cursor(const std::uint8_t* base, size_t size, std::string context)
      : base_(base), size_(size), context_(std::move(context)) {}

  std::uint8_t u8() {
    need(1);
    return base_[at_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i)
      v = (v << 8) | base_[at_ + static_cast<size_t>(i)];
    at_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i)
      v = (v << 8) | base_[at_ + static_cast<size_t>(i)];
    at_ += 8;
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  Complex cplx() {
    const double re = f64();
    const double im = f64();
    return Complex(re, im);
  }
  std::string str() {
    const std::uint64_t len = u64();
    need(len);
    std::string s(reinterpret_cast<const char*>(base_ + at_), len);
    at_ += len;
    return s;
  }
  void expect_done() const {
    if (at_ != size_)
      throw IoError(context_ + ": trailing bytes");
  }

private:
  void need(std::uint64_t n) {
    if (size_ - at_ < n)
      throw IoError(context_ + ": truncated");
  }
  const std::uint8_t* base_;
  size_t size_;
  size_t at_ = 0;
  std::string context_;
};

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b, const std::string& context) {
  if (b != 0 && a > std::numeric_limits<std::uint64_t>::max() / b)
    throw IoError(context + ": size overflow");
  return a * b;
}

Eigen::Index as_dim(std::uint64_t v, const std::string& context) {
  if (v > (1ULL << 48))
    throw IoError(context + ": implausible dimension");
  return static_cast<Eigen::Index>(v);
}

// Checks the pairing invariants complete_conjugate_rows relies on. Returns
// an empty string when consistent, a description of the defect otherwise.
std::string mode_table_defect(const std::vector<ModeInfo>& modes) {
  const auto m = static_cast<std::int64_t>(modes.size());
  for (std::int64_t k = 0; k < m; ++k) {
    const ModeInfo& info = modes[static_cast<size_t>(k)];
    if (info.kind == ModeKind::real_mode) {
      if (info.pair_partner != -1)
        return "real mode " + std::to_string(k) + " has a pair partner";
      if (!info.representative)
        return "real mode " + std::to_string(k) + " is not its own representative";
      continue;
    }
    const std::int64_t p = info.pair_partner;
    if (p < 0 || p >= m || p == k)
      return "mode " + std::to_string(k) + " has pair partner " + std::to_string(p) +
             " out of range";
    const ModeInfo& partner = modes[static_cast<size_t>(p)];
    if (partner.kind != ModeKind::complex_pair || partner.pair_partner != k)
      return "modes " + std::to_string(k) + " and " + std::to_string(p) +
             " are not mutual pair partners";
    if (info.representative == partner.representative)
      return "pair " + std::to_string(k) + "/" + std::to_string(p) +
             " does not have exactly one representative";
  }
  return {};
}

int representative_count(const std::vector<ModeInfo>& modes) {
  int count = 0;
  for (const ModeInfo& info : modes)
    count += info.representative ? 1 : 0;
  return count;
}

void check_saveable(const RomModel& rom) {
  const Eigen::Index n = rom.fom.n_states;
  const Eigen::Index n_d = rom.fom.n_disturbance;
  const Eigen::Index m = rom.basis.lambdas.size();
  auto fail = [](const std::string& why) { throw ContractViolation("save_rom: " + why); };
  if (rom.order < 1 || rom.order > 3)
    fail("order " + std::to_string(rom.order) + " out of range");
  if (rom.fom.state_labels.size() != static_cast<size_t>(n))
    fail("descriptor label count does not match the state count");
  if (rom.w0.size() != n)
    fail("expansion point size does not match the state count");
  if (rom.u_c.size() != rom.fom.n_control)
    fail("held-control size does not match the descriptor");
  if (m < 1)
    fail("empty basis");
  if (rom.basis.modes.size() != static_cast<size_t>(m))
    fail("mode table size does not match the basis size");
  if (rom.basis.Phi.rows() != n || rom.basis.Phi.cols() != m ||
      rom.basis.Psi.rows() != n || rom.basis.Psi.cols() != m)
    fail("eigenvector block dimensions do not match the basis");
  if (rom.Bg.rows() != n || rom.Bg.cols() != n_d)
    fail("gust input matrix dimensions do not match the descriptor");
  if (rom.Bg_reduced.rows() != m || rom.Bg_reduced.cols() != n_d)
    fail("reduced gust input dimensions do not match the basis");
  if (rom.D.dim() != (rom.order >= 2 ? m : 0))
    fail("quadratic tensor does not match the declared order");
  if (rom.E.dim() != (rom.order == 3 ? m : 0))
    fail("cubic tensor does not match the declared order");
  const std::string defect = mode_table_defect(rom.basis.modes);
  if (!defect.empty())
    fail("mode table inconsistent: " + defect);
}

// Serializes the section region (everything between header and trailer).
std::vector<std::uint8_t> payload_bytes(const RomModel& rom) {
  check_saveable(rom);
  const Eigen::Index n = rom.fom.n_states;
  const Eigen::Index n_d = rom.fom.n_disturbance;
  const Eigen::Index m = rom.basis.lambdas.size();
  std::vector<std::uint8_t> out;

  Payload desc;
  desc.str(rom.fom.name);
  desc.u64(static_cast<std::uint64_t>(n));
  desc.u64(static_cast<std::uint64_t>(n_d));
  desc.u64(static_cast<std::uint64_t>(rom.fom.n_control));
  desc.u64(rom.fom.state_labels.size());
  for (const std::string& label : rom.fom.state_labels)
    desc.str(label);
  append_section(out, "DESC", desc);

  Payload base;
  base.u64(static_cast<std::uint64_t>(rom.w0.size()));
  for (Eigen::Index i = 0; i < rom.w0.size(); ++i)
    base.f64(rom.w0[i]);
  base.u64(static_cast<std::uint64_t>(rom.u_c.size()));
  for (Eigen::Index i = 0; i < rom.u_c.size(); ++i)
    base.f64(rom.u_c[i]);
  append_section(out, "BASE", base);

  Payload meta;
  meta.u32(static_cast<std::uint32_t>(rom.order));
  meta.f64(rom.fd_step_jacobian);
  meta.f64(rom.bilinear_report.h);
  meta.f64(rom.bilinear_report.richardson_dev);
  meta.i64(rom.bilinear_report.residual_evaluations);
  meta.f64(rom.trilinear_report.h);
  meta.f64(rom.trilinear_report.richardson_dev);
  meta.i64(rom.trilinear_report.residual_evaluations);
  append_section(out, "META", meta);

  Payload mode;
  mode.u64(static_cast<std::uint64_t>(m));
  for (const ModeInfo& info : rom.basis.modes) {
    mode.u8(info.kind == ModeKind::real_mode ? 0 : 1);
    mode.i64(info.pair_partner);
    mode.u8(info.representative ? 1 : 0);
    mode.str(info.tag);
    mode.str(info.reason);
  }
  mode.u64(rom.basis.warnings.size());
  for (const std::string& warning : rom.basis.warnings)
    mode.str(warning);
  append_section(out, "MODE", mode);

  const int reps = representative_count(rom.basis.modes);

  Payload eigl;
  eigl.u64(static_cast<std::uint64_t>(reps));
  for (Eigen::Index k = 0; k < m; ++k)
    if (rom.basis.modes[static_cast<size_t>(k)].representative)
      eigl.cplx(rom.basis.lambdas[k]);
  append_section(out, "EIGL", eigl);

  auto eigenvector_block = [&](const Eigen::MatrixXcd& block) {
    Payload p;
    p.u64(static_cast<std::uint64_t>(n));
    p.u64(static_cast<std::uint64_t>(reps));
    for (Eigen::Index k = 0; k < m; ++k) {
      if (!rom.basis.modes[static_cast<size_t>(k)].representative)
        continue;
      for (Eigen::Index i = 0; i < n; ++i)
        p.cplx(block(i, k));
    }
    return p;
  };
  append_section(out, "PHIM", eigenvector_block(rom.basis.Phi));
  append_section(out, "PSIM", eigenvector_block(rom.basis.Psi));

  Payload bgfu;
  bgfu.u64(static_cast<std::uint64_t>(n));
  bgfu.u64(static_cast<std::uint64_t>(n_d));
  for (Eigen::Index j = 0; j < n_d; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      bgfu.f64(rom.Bg(i, j));
  append_section(out, "BGFU", bgfu);

  Payload bgrd;
  bgrd.u64(static_cast<std::uint64_t>(reps));
  bgrd.u64(static_cast<std::uint64_t>(n_d));
  for (Eigen::Index k = 0; k < m; ++k) {
    if (!rom.basis.modes[static_cast<size_t>(k)].representative)
      continue;
    for (Eigen::Index j = 0; j < n_d; ++j)
      bgrd.cplx(rom.Bg_reduced(k, j));
  }
  append_section(out, "BGRD", bgrd);

  if (rom.order >= 2) {
    Payload tend;
    tend.u64(static_cast<std::uint64_t>(reps));
    tend.u64(static_cast<std::uint64_t>(m));
    const size_t slice = static_cast<size_t>(m * m);
    for (Eigen::Index k = 0; k < m; ++k) {
      if (!rom.basis.modes[static_cast<size_t>(k)].representative)
        continue;
      for (size_t q = 0; q < slice; ++q)
        tend.cplx(rom.D.data()[static_cast<size_t>(k) * slice + q]);
    }
    append_section(out, "TEND", tend);
  }

  if (rom.order == 3) {
    Payload tene;
    tene.u64(static_cast<std::uint64_t>(reps));
    tene.u64(static_cast<std::uint64_t>(m));
    const size_t slice = static_cast<size_t>(m * m * m);
    for (Eigen::Index k = 0; k < m; ++k) {
      if (!rom.basis.modes[static_cast<size_t>(k)].representative)
        continue;
      for (size_t q = 0; q < slice; ++q)
        tene.cplx(rom.E.data()[static_cast<size_t>(k) * slice + q]);
    }
    append_section(out, "TENE", tene);
  }

  return out;
}

struct SectionSpan {
  size_t offset = 0;
  size_t size = 0;
};

bool known_tag(const std::string& tag) {
  static const char* kTags[] = {"DESC", "BASE", "META", "MODE", "EIGL", "PHIM",
                                "PSIM", "BGFU", "BGRD", "TEND", "TENE"};
  for (const char* t : kTags)
    if (tag == t)
      return true;
  return false;
}

} // namespace

std::uint64_t rom_content_hash(const RomModel& rom) {
  const std::vector<std::uint8_t> payload = payload_bytes(rom);
  return fnv1a64(payload.data(), payload.size());
}

void save_rom(const RomModel& rom, const std::string& path) {
  const std::vector<std::uint8_t> payload = payload_bytes(rom);
  const std::uint64_t hash = fnv1a64(payload.data(), payload.size());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw IoError(path + ": cannot open for writing");

  std::vector<std::uint8_t> head(kMagic, kMagic + 8);
  for (int i = 0; i < 4; ++i)
    head.push_back(static_cast<std::uint8_t>(kVersion >> (8 * i)));
  out.write(reinterpret_cast<const char*>(head.data()),
            static_cast<std::streamsize>(head.size()));
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));

  Payload trailer;
  trailer.u64(hash);
  std::vector<std::uint8_t> tail;
  append_section(tail, "HASH", trailer);
  out.write(reinterpret_cast<const char*>(tail.data()),
            static_cast<std::streamsize>(tail.size()));

  out.flush();
  if (!out.good())
    throw IoError(path + ": write failed");
}

RomModel load_rom(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError(path + ": cannot open for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad())
    throw IoError(path + ": read failed");

  if (bytes.size() < kHeaderSize)
    throw IoError(path + ": truncated container header");
  if (std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw IoError(path + ": magic mismatch, not a reduced-model container");
  std::uint32_t version = 0;
  for (int i = 3; i >= 0; --i)
    version = (version << 8) | bytes[8 + static_cast<size_t>(i)];
  if (version != kVersion)
    throw IoError(path + ": unsupported container version " + std::to_string(version));

  // Walk the section table; the hash trailer must close the file.
  std::map<std::string, SectionSpan> sections;
  size_t at = kHeaderSize;
  while (true) {
    if (bytes.size() - at < 12)
      throw IoError(path + ": truncated section table");
    const std::string tag(reinterpret_cast<const char*>(bytes.data() + at), 4);
    std::uint64_t len = 0;
    for (int i = 7; i >= 0; --i)
      len = (len << 8) | bytes[at + 4 + static_cast<size_t>(i)];
    const size_t payload_at = at + 12;
    if (len > bytes.size() - payload_at)
      throw IoError(path + ": truncated section '" + tag + "'");
    if (tag == "HASH") {
      if (len != 8)
        throw IoError(path + ": malformed hash trailer");
      if (payload_at + 8 != bytes.size())
        throw IoError(path + ": trailing bytes after the hash trailer");
      std::uint64_t stored = 0;
      for (int i = 7; i >= 0; --i)
        stored = (stored << 8) | bytes[payload_at + static_cast<size_t>(i)];
      const std::uint64_t actual = fnv1a64(bytes.data() + kHeaderSize, at - kHeaderSize);
      if (stored != actual)
        throw IoError(path + ": content hash mismatch");
      break;
    }
    if (!known_tag(tag))
      throw IoError(path + ": unknown section '" + tag + "'");
    if (sections.count(tag))
      throw IoError(path + ": duplicate section '" + tag + "'");
    sections[tag] = SectionSpan{payload_at, static_cast<size_t>(len)};
    at = payload_at + static_cast<size_t>(len);
  }

  auto open_section = [&](const char* tag) {
    auto it = sections.find(tag);
    if (it == sections.end())
      throw IoError(path + ": missing section '" + std::string(tag) + "'");
    const std::string context = path + ": section '" + tag + "'";
    return Cursor(bytes.data() + it->second.offset, it->second.size, context);
  };
  auto section_size = [&](const char* tag) { return sections.at(tag).size; };

  RomModel rom;

  Cursor desc = open_section("DESC");
  rom.fom.name = desc.str();
  const Eigen::Index n = as_dim(desc.u64(), path + ": state count");
  const Eigen::Index n_d = as_dim(desc.u64(), path + ": disturbance count");
  const Eigen::Index n_c = as_dim(desc.u64(), path + ": control count");
  rom.fom.n_states = n;
  rom.fom.n_disturbance = n_d;
  rom.fom.n_control = n_c;
  const std::uint64_t label_count = desc.u64();
  if (label_count != static_cast<std::uint64_t>(n))
    throw IoError(path + ": label count does not match the state count");
  for (std::uint64_t i = 0; i < label_count; ++i)
    rom.fom.state_labels.push_back(desc.str());
  desc.expect_done();
  try {
    rom.fom.validate();
  } catch (const Error& e) {
    throw IoError(path + ": invalid descriptor: " + e.what());
  }

  Cursor base = open_section("BASE");
  if (base.u64() != static_cast<std::uint64_t>(n))
    throw IoError(path + ": expansion point size does not match the state count");
  rom.w0.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    rom.w0[i] = base.f64();
  if (base.u64() != static_cast<std::uint64_t>(n_c))
    throw IoError(path + ": held-control size does not match the control count");
  rom.u_c.resize(n_c);
  for (Eigen::Index i = 0; i < n_c; ++i)
    rom.u_c[i] = base.f64();
  base.expect_done();

  Cursor meta = open_section("META");
  const std::uint32_t order = meta.u32();
  if (order < 1 || order > 3)
    throw IoError(path + ": expansion order " + std::to_string(order) + " out of range");
  rom.order = static_cast<int>(order);
  rom.fd_step_jacobian = meta.f64();
  rom.bilinear_report.h = meta.f64();
  rom.bilinear_report.richardson_dev = meta.f64();
  rom.bilinear_report.residual_evaluations = static_cast<long>(meta.i64());
  rom.trilinear_report.h = meta.f64();
  rom.trilinear_report.richardson_dev = meta.f64();
  rom.trilinear_report.residual_evaluations = static_cast<long>(meta.i64());
  meta.expect_done();

  Cursor mode = open_section("MODE");
  const Eigen::Index m = as_dim(mode.u64(), path + ": mode count");
  if (m < 1)
    throw IoError(path + ": empty basis");
  for (Eigen::Index k = 0; k < m; ++k) {
    ModeInfo info;
    const std::uint8_t kind = mode.u8();
    if (kind > 1)
      throw IoError(path + ": invalid mode kind " + std::to_string(static_cast<int>(kind)));
    info.kind = kind == 0 ? ModeKind::real_mode : ModeKind::complex_pair;
    info.pair_partner = static_cast<int>(mode.i64());
    info.representative = mode.u8() != 0;
    info.tag = mode.str();
    info.reason = mode.str();
    rom.basis.modes.push_back(info);
  }
  const std::uint64_t warning_count = mode.u64();
  for (std::uint64_t i = 0; i < warning_count; ++i)
    rom.basis.warnings.push_back(mode.str());
  mode.expect_done();
  const std::string defect = mode_table_defect(rom.basis.modes);
  if (!defect.empty())
    throw IoError(path + ": mode table inconsistent: " + defect);
  const int reps = representative_count(rom.basis.modes);

  // Fixed-size numeric sections: verify the recorded dimensions and the
  // byte count before allocating anything.
  const std::uint64_t u_n = static_cast<std::uint64_t>(n);
  const std::uint64_t u_nd = static_cast<std::uint64_t>(n_d);
  const std::uint64_t u_m = static_cast<std::uint64_t>(m);
  const std::uint64_t u_reps = static_cast<std::uint64_t>(reps);
  auto require_dims = [&](const char* tag, Cursor& c, std::uint64_t rows, std::uint64_t cols) {
    if (c.u64() != rows || c.u64() != cols)
      throw IoError(path + ": section '" + std::string(tag) +
                    "': dimensions do not match the mode table");
  };
  auto require_size = [&](const char* tag, std::uint64_t lead, std::uint64_t count,
                          std::uint64_t scalar_size) {
    const std::string context = path + ": section '" + std::string(tag) + "'";
    if (section_size(tag) != lead + checked_mul(count, scalar_size, context))
      throw IoError(context + ": size mismatch");
  };

  Cursor eigl = open_section("EIGL");
  if (eigl.u64() != u_reps)
    throw IoError(path + ": section 'EIGL': dimensions do not match the mode table");
  require_size("EIGL", 8, u_reps, 16);
  std::vector<Complex> rep_lambdas;
  for (int i = 0; i < reps; ++i)
    rep_lambdas.push_back(eigl.cplx());
  eigl.expect_done();

  auto read_eigenvectors = [&](const char* tag) {
    Cursor c = open_section(tag);
    require_dims(tag, c, u_n, u_reps);
    require_size(tag, 16, checked_mul(u_n, u_reps, path), 16);
    Eigen::MatrixXcd block(n, reps);
    for (int j = 0; j < reps; ++j)
      for (Eigen::Index i = 0; i < n; ++i)
        block(i, j) = c.cplx();
    c.expect_done();
    return block;
  };
  const Eigen::MatrixXcd rep_phi = read_eigenvectors("PHIM");
  const Eigen::MatrixXcd rep_psi = read_eigenvectors("PSIM");

  Cursor bgfu = open_section("BGFU");
  require_dims("BGFU", bgfu, u_n, u_nd);
  require_size("BGFU", 16, checked_mul(u_n, u_nd, path), 8);
  rom.Bg.resize(n, n_d);
  for (Eigen::Index j = 0; j < n_d; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      rom.Bg(i, j) = bgfu.f64();
  bgfu.expect_done();

  Cursor bgrd = open_section("BGRD");
  require_dims("BGRD", bgrd, u_reps, u_nd);
  require_size("BGRD", 16, checked_mul(u_reps, u_nd, path), 16);
  Eigen::MatrixXcd rep_bg(reps, n_d);
  for (int k = 0; k < reps; ++k)
    for (Eigen::Index j = 0; j < n_d; ++j)
      rep_bg(k, j) = bgrd.cplx();
  bgrd.expect_done();

  std::vector<Complex> rep_d, rep_e;
  if (rom.order >= 2) {
    Cursor tend = open_section("TEND");
    require_dims("TEND", tend, u_reps, u_m);
    require_size("TEND", 16, checked_mul(u_reps, checked_mul(u_m, u_m, path), path), 16);
    rep_d.resize(static_cast<size_t>(reps) * static_cast<size_t>(m * m));
    for (Complex& v : rep_d)
      v = tend.cplx();
    tend.expect_done();
  } else if (sections.count("TEND")) {
    throw IoError(path + ": section 'TEND' not allowed at order " + std::to_string(rom.order));
  }
  if (rom.order == 3) {
    Cursor tene = open_section("TENE");
    require_dims("TENE", tene, u_reps, u_m);
    require_size("TENE", 16,
                 checked_mul(u_reps, checked_mul(u_m, checked_mul(u_m, u_m, path), path), path),
                 16);
    rep_e.resize(static_cast<size_t>(reps) * static_cast<size_t>(m * m * m));
    for (Complex& v : rep_e)
      v = tene.cplx();
    tene.expect_done();
  } else if (sections.count("TENE")) {
    throw IoError(path + ": section 'TENE' not allowed at order " + std::to_string(rom.order));
  }

  // Place representative data, then rebuild the conjugate partners.
  rom.basis.lambdas = Eigen::VectorXcd::Zero(m);
  rom.basis.Phi = Eigen::MatrixXcd::Zero(n, m);
  rom.basis.Psi = Eigen::MatrixXcd::Zero(n, m);
  rom.Bg_reduced = Eigen::MatrixXcd::Zero(m, n_d);
  if (rom.order >= 2)
    rom.D = Tensor3c(m);
  if (rom.order == 3)
    rom.E = Tensor4c(m);
  int slot = 0;
  for (Eigen::Index k = 0; k < m; ++k) {
    if (!rom.basis.modes[static_cast<size_t>(k)].representative)
      continue;
    rom.basis.lambdas[k] = rep_lambdas[static_cast<size_t>(slot)];
    rom.basis.Phi.col(k) = rep_phi.col(slot);
    rom.basis.Psi.col(k) = rep_psi.col(slot);
    rom.Bg_reduced.row(k) = rep_bg.row(slot);
    if (rom.order >= 2) {
      const size_t slice = static_cast<size_t>(m * m);
      std::memcpy(rom.D.data().data() + static_cast<size_t>(k) * slice,
                  rep_d.data() + static_cast<size_t>(slot) * slice, slice * sizeof(Complex));
    }
    if (rom.order == 3) {
      const size_t slice = static_cast<size_t>(m * m * m);
      std::memcpy(rom.E.data().data() + static_cast<size_t>(k) * slice,
                  rep_e.data() + static_cast<size_t>(slot) * slice, slice * sizeof(Complex));
    }
    ++slot;
  }
  complete_conjugate_rows(rom);

  // A container can be intact yet describe a broken reduction; re-verify
  // the projection identity the integrator depends on.
  const Eigen::MatrixXcd gram = rom.basis.Psi.adjoint() * rom.basis.Phi;
  const double biortho_defect =
      (gram - Eigen::MatrixXcd::Identity(m, m)).cwiseAbs().maxCoeff();
  if (!(biortho_defect <= kLoadBiorthoTol))
    throw ReductionError(path + ": biorthonormality defect " + std::to_string(biortho_defect) +
                         " exceeds " + std::to_string(kLoadBiorthoTol) + " after load");

  return rom;
}

} // namespace gustrom
