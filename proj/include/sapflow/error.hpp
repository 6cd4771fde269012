#pragma once

#include <stdexcept>
#include <string>

namespace sapflow {

/// Base class of every error raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Malformed mesh, CSV or manifest text.
class ParseError : public Error
{
public:
    using Error::Error;
};

/// Open, non-manifold or otherwise unusable connectivity.
class TopologyError : public Error
{
public:
    using Error::Error;
};

class IoError : public Error
{
public:
    using Error::Error;
};

/// Zero-area faces, zero-length normals, and similar.
class DegenerateGeometry : public Error
{
public:
    using Error::Error;
};

/// Mesh is inward oriented (negative enclosed volume).
class OrientationError : public Error
{
public:
    using Error::Error;
};

/// The integral of H^2 vanishes, so the nonlocal coefficient is undefined.
class DegenerateMeanCurvature : public Error
{
public:
    using Error::Error;
};

/// Rank-deficient local curvature fit.
class RankDeficientFit : public Error
{
public:
    using Error::Error;
};

/// Linear solve failure or non-finite values during time stepping.
class NumericalError : public Error
{
public:
    using Error::Error;
};

class NonPositiveSamples : public Error
{
public:
    using Error::Error;
};

class WindowTooSmall : public Error
{
public:
    using Error::Error;
};

/// Sphere fit on coplanar or too few points.
class DegenerateFit : public Error
{
public:
    using Error::Error;
};

/// Bad argument values (negative radius, empty series, ...).
class InvalidArgument : public Error
{
public:
    using Error::Error;
};

} // namespace sapflow
