#pragma once

#include "voices/cluster.hpp"
#include "voices/dimred.hpp"
#include "voices/sweep.hpp"
#include "voices/validate.hpp"

#include <json.hpp>

namespace voices
{

/// JSON document type used for every sidecar, report and log line (keys keep insertion order).
using Json = nlohmann::ordered_json;

Json points_to_json(const Points& m);
Points points_from_json(const Json& j);
Json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const Json& j);
Json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const Json& j);

/// Non-finite values become strings ("inf", "-inf", "nan") so they survive a round trip.
Json real_to_json(double x);
double real_from_json(const Json& j);

// Missing keys keep their defaults when reading configurations.
void to_json(Json& j, const ReductionConfig& cfg);
void from_json(const Json& j, ReductionConfig& cfg);
void to_json(Json& j, const ClusterConfig& cfg);
void from_json(const Json& j, ClusterConfig& cfg);

void to_json(Json& j, const KmeansDetail& d);
void from_json(const Json& j, KmeansDetail& d);
void to_json(Json& j, const GmmDetail& d);
void from_json(const Json& j, GmmDetail& d);
void to_json(Json& j, const HdbscanDetail& d);
void from_json(const Json& j, HdbscanDetail& d);
void to_json(Json& j, const ClusterAssignment& a);
void from_json(const Json& j, ClusterAssignment& a);

void to_json(Json& j, const ClusterComposition& c);
void from_json(const Json& j, ClusterComposition& c);
void to_json(Json& j, const AttributeReport& r);
void from_json(const Json& j, AttributeReport& r);
void to_json(Json& j, const ApcsResult& r);
void from_json(const Json& j, ApcsResult& r);
void to_json(Json& j, const ValidationReport& r);
void from_json(const Json& j, ValidationReport& r);

void to_json(Json& j, const TrialConfig& c);
void from_json(const Json& j, TrialConfig& c);
void to_json(Json& j, const TrialResult& r);
void from_json(const Json& j, TrialResult& r);
void to_json(Json& j, const ValidationOptions& o);
void from_json(const Json& j, ValidationOptions& o);
void to_json(Json& j, const SweepSpec& s);
void from_json(const Json& j, SweepSpec& s);

}  // namespace voices
