#pragma once

#include <string>

#include "phenoct/runner.hpp"

namespace phenoct {

enum class PhantomEffect { Gallstone, Steatosis, Cyst };

PhantomEffect parse_effect(const std::string& name);
std::string effect_name(PhantomEffect effect);

// Desk-scale synthetic cohort: small voxel phantoms with body, liver,
// spleen, gallbladder, kidney (+cyst), aorta, abdominal cavity (+fluid)
// classes. Positives receive the planted effect; HU textures are seeded
// noise around organ-typical means. Same plan and seed give a
// byte-identical cohort.
struct PhantomPlan {
    std::size_t cohort_size = 200;
    double prevalence = 0.2;
    PhantomEffect effect = PhantomEffect::Gallstone;
    double noise_sigma = 8.0;
    std::uint64_t seed = 7;
};

// The catalog matching the phantom's label classes.
std::string default_phantom_catalog_json();

// Writes per-case volume/labelmap NIfTI files, catalog.json and
// manifest.csv under out_dir; returns the manifest.
CohortManifest generate_phantom_cohort(const PhantomPlan& plan, const std::string& out_dir);

}  // namespace phenoct
