#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

// Self-check registry: each property is a seeded end-to-end invariant check
// over freshly generated inputs. The seed varies the inputs, never the
// verdict; a failure means the build is wrong, not that the draw was unlucky.

namespace pointode::verify {

std::size_t property_count();

// Short kebab-case identifier, stable across releases.
const std::string& property_name(std::size_t index);

// One-line human description of what the property asserts.
const std::string& property_summary(std::size_t index);

// Runs one property with fresh inputs derived from the seed. Returns true
// when the invariant held. Throws on an out-of-range index.
bool run_property(std::size_t index, std::uint64_t seed);

}  // namespace pointode::verify
