#!/usr/bin/python
# -*- coding: utf-8 -*-
#
# Copyright (c) 2022 Seagate Technology LLC and/or its Affiliates
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU Affero General Public License as published
# by the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the
# GNU Affero General Public License for more details.
# You should have received a copy of the GNU Affero General Public License
# along with this program. If not, see <https://www.gnu.org/licenses/>.
#
# For any questions about this software or licensing,
# please email opensource@seagate.com or cortx-questions@seagate.com.
#
#

"""Exception module for i2preg tool."""


class I2PRegError(Exception):
    """General exception class for i2preg tool."""

    def __init__(self, message=""):
        """Initialize error."""
        super().__init__(message)
        self.message = message

    def __str__(self):
        """Print error message."""
        return self.message


class NonPositiveDepth(I2PRegError):
    """Exception class for a projection or back-projection at depth <= 0."""


class DegenerateNeighborhood(I2PRegError):
    """Exception class for a neighbourhood whose normal direction is ill-defined."""


class DimensionMismatch(I2PRegError):
    """Exception class for graph/feature/parameter size disagreement."""


class ShapeMismatch(I2PRegError):
    """Exception class for feature matrices of different shapes."""


class ChannelMismatch(I2PRegError):
    """Exception class for feature fields with different channel counts."""


class NotNormalized(I2PRegError):
    """Exception class for feature rows that are not unit length."""


class EmptyOverlap(I2PRegError):
    """Exception class for normal fields with no jointly valid entry."""


class EmptyPatch(I2PRegError):
    """Exception class for an empty image or cloud patch."""


class EmptySample(I2PRegError):
    """Exception class for an empty MMD sample."""


class EmptyInput(I2PRegError):
    """Exception class for an empty metric input."""


class EmptyCloud(I2PRegError):
    """Exception class for an empty point cloud."""


class EmptyCorrespondences(I2PRegError):
    """Exception class for an empty correspondence set."""


class EmptyVisibleSet(I2PRegError):
    """Exception class for a synthetic scene without visible points."""


class InsufficientPoints(I2PRegError):
    """Exception class for too few correspondences for the PnP solver."""


class DegenerateConfiguration(I2PRegError):
    """Exception class for coplanar or collinear PnP input."""


class NoConsensus(I2PRegError):
    """Exception class for RANSAC without an acceptable hypothesis."""


class InvalidRotation(I2PRegError):
    """Exception class for a matrix outside SO(3)."""


class LengthMismatch(I2PRegError):
    """Exception class for misaligned scene/result lists."""


class IoError(I2PRegError):
    """Exception class for unreadable or unwritable bundles."""


class InvalidTransform(I2PRegError, ValueError):
    """Exception class for a rigid transform violating its invariants."""


class ConfigError(I2PRegError, ValueError):
    """Exception class for invalid or unknown configuration."""
