// Copyright (c) the gustrom project contributors.
// SPDX-License-Identifier: Apache-2.0

#ifndef GUSTROM_ROM_IO_HPP
#define GUSTROM_ROM_IO_HPP

#include <cstdint>
#include <string>

#include "gustrom/rom.hpp"

namespace gustrom {

// Self-describing binary container for RomModel (magic + version + tagged
// sections + FNV-1a content hash). Conjugate pairs are stored as the
// representative half only; partners are reconstituted on load, which is
// exact because conjugation just flips sign bits. Numeric payloads are raw
// little-endian IEEE doubles, so save/load round-trips are bit-identical.
void save_rom(const RomModel& rom, const std::string& path);

// Verifies the content hash and re-checks biorthonormality (Psi^H Phi = I)
// before returning; either failing is an IoError / ReductionError.
RomModel load_rom(const std::string& path);

// Hash of the serialized payload, as stored in the container trailer.
std::uint64_t rom_content_hash(const RomModel& rom);

} // namespace gustrom

#endif // GUSTROM_ROM_IO_HPP
