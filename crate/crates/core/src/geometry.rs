//! Pinhole camera over a planar, horizontal road.
//!
//! Frames:
//! - ground: `lateral` (metres, right-positive) and `forward` (metres, away
//!   from the camera) on the road plane, origin directly below the camera;
//! - camera: x right, y down, z along the optical axis;
//! - image: origin top-left, `u` along columns, `v` increasing downward.
//!
//! Positive pitch tilts the optical axis toward the road. Yaw rotates the
//! camera heading counter-clockwise when viewed from above. Roll is zero.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Homogeneous `w` below this is treated as the plane at infinity.
pub const MIN_HOMOGENEOUS_W: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub focal_u: f64,
    pub focal_v: f64,
    pub center_u: f64,
    pub center_v: f64,
    pub image_width: u32,
    pub image_height: u32,
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.focal_u, self.focal_v, self.center_u, self.center_v]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.focal_u <= 0.0 || self.focal_v <= 0.0 {
            return Err(Error::InvalidIntrinsics("focal lengths must be finite and positive".into()));
        }
        if self.image_width == 0 || self.image_height == 0 {
            return Err(Error::InvalidIntrinsics("image dimensions must be at least 1".into()));
        }
        if !(0.0..f64::from(self.image_width)).contains(&self.center_u)
            || !(0.0..f64::from(self.image_height)).contains(&self.center_v)
        {
            return Err(Error::InvalidIntrinsics("principal point outside the image".into()));
        }
        Ok(())
    }

    fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.focal_u, 0.0, self.center_u, //
            0.0, self.focal_v, self.center_v, //
            0.0, 0.0, 1.0,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundPlanePose {
    /// Metres above the road plane.
    pub camera_height: f64,
    /// Radians, positive tilts the optical axis down.
    pub pitch: f64,
    /// Radians about the vertical axis.
    #[serde(default)]
    pub yaw: f64,
}

impl GroundPlanePose {
    pub fn validate(&self) -> Result<()> {
        if !(self.camera_height.is_finite() && self.camera_height > 0.0) {
            return Err(Error::InvalidPose(format!(
                "camera_height must be positive, got {}",
                self.camera_height
            )));
        }
        if !(self.pitch.is_finite() && self.pitch.abs() < std::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidPose(format!("|pitch| must be below pi/2, got {}", self.pitch)));
        }
        if !self.yaw.is_finite() {
            return Err(Error::InvalidPose("yaw must be finite".into()));
        }
        Ok(())
    }
}

/// A point on the road plane, in metres.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundPoint {
    pub lateral: f64,
    pub forward: f64,
}

impl GroundPoint {
    pub const fn new(lateral: f64, forward: f64) -> Self {
        Self { lateral, forward }
    }

    pub fn distance(&self, other: &GroundPoint) -> f64 {
        (self.lateral - other.lateral).hypot(self.forward - other.forward)
    }
}

/// Continuous pixel coordinates; may fall outside the image.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
}

impl PixelPoint {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

/// Calibration file contents: intrinsics and ground pose in one flat object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraRig {
    pub focal_u: f64,
    pub focal_v: f64,
    pub center_u: f64,
    pub center_v: f64,
    pub image_width: u32,
    pub image_height: u32,
    pub camera_height: f64,
    pub pitch: f64,
    #[serde(default)]
    pub yaw: f64,
}

impl CameraRig {
    pub fn new(intrinsics: CameraIntrinsics, pose: GroundPlanePose) -> Self {
        Self {
            focal_u: intrinsics.focal_u,
            focal_v: intrinsics.focal_v,
            center_u: intrinsics.center_u,
            center_v: intrinsics.center_v,
            image_width: intrinsics.image_width,
            image_height: intrinsics.image_height,
            camera_height: pose.camera_height,
            pitch: pose.pitch,
            yaw: pose.yaw,
        }
    }

    pub fn intrinsics(&self) -> CameraIntrinsics {
        CameraIntrinsics {
            focal_u: self.focal_u,
            focal_v: self.focal_v,
            center_u: self.center_u,
            center_v: self.center_v,
            image_width: self.image_width,
            image_height: self.image_height,
        }
    }

    pub fn pose(&self) -> GroundPlanePose {
        GroundPlanePose {
            camera_height: self.camera_height,
            pitch: self.pitch,
            yaw: self.yaw,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.intrinsics().validate()?;
        self.pose().validate()
    }

    /// Precompute the projective maps for repeated use.
    pub fn projector(&self) -> Result<GroundProjector> {
        GroundProjector::new(&self.intrinsics(), &self.pose())
    }
}

/// Maps (lateral, forward, 1) on the road plane to camera coordinates.
fn ground_to_camera(pose: &GroundPlanePose) -> Matrix3<f64> {
    let (sp, cp) = pose.pitch.sin_cos();
    let (sy, cy) = pose.yaw.sin_cos();
    let h = pose.camera_height;
    // Rotating ground coordinates into the camera heading (by -yaw) gives
    // lateral' = cy*x + sy*z and forward' = -sy*x + cy*z; the pitch then
    // mixes forward' with the constant depth of the road below the camera.
    Matrix3::new(
        cy, sy, 0.0, //
        sp * sy, -sp * cy, h * cp, //
        -cp * sy, cp * cy, h * sp,
    )
}

/// Projective map H with image ∝ H · (lateral, forward, 1).
pub fn ground_homography(intrinsics: &CameraIntrinsics, pose: &GroundPlanePose) -> Result<Matrix3<f64>> {
    intrinsics.validate()?;
    pose.validate()?;
    let h = intrinsics.matrix() * ground_to_camera(pose);
    let scale = h.abs().max().powi(3);
    if h.determinant().abs() <= 1e-12 * scale {
        return Err(Error::InvalidPose("ground homography is singular".into()));
    }
    Ok(h)
}

pub fn ground_to_image(
    p: GroundPoint,
    intrinsics: &CameraIntrinsics,
    pose: &GroundPlanePose,
) -> Result<PixelPoint> {
    GroundProjector::new(intrinsics, pose)?.to_image(p)
}

pub fn image_to_ground(
    q: PixelPoint,
    intrinsics: &CameraIntrinsics,
    pose: &GroundPlanePose,
) -> Result<GroundPoint> {
    GroundProjector::new(intrinsics, pose)?.to_ground(q)
}

/// A validated rig with its homography cached.
#[derive(Debug, Clone)]
pub struct GroundProjector {
    intrinsics: CameraIntrinsics,
    pose: GroundPlanePose,
    homography: Matrix3<f64>,
}

impl GroundProjector {
    pub fn new(intrinsics: &CameraIntrinsics, pose: &GroundPlanePose) -> Result<Self> {
        let homography = ground_homography(intrinsics, pose)?;
        Ok(Self {
            intrinsics: *intrinsics,
            pose: *pose,
            homography,
        })
    }

    pub fn homography(&self) -> &Matrix3<f64> {
        &self.homography
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.intrinsics
    }

    /// Homogeneous depth of a ground point; positive in front of the camera.
    pub fn depth(&self, p: GroundPoint) -> f64 {
        let row = self.homography.row(2);
        row[0] * p.lateral + row[1] * p.forward + row[2]
    }

    pub fn to_image(&self, p: GroundPoint) -> Result<PixelPoint> {
        let x = self.homography * Vector3::new(p.lateral, p.forward, 1.0);
        if x.z.is_nan() || x.z < MIN_HOMOGENEOUS_W {
            return Err(Error::NotVisible(format!(
                "ground point ({}, {}) is behind the camera",
                p.lateral, p.forward
            )));
        }
        Ok(PixelPoint::new(x.x / x.z, x.y / x.z))
    }

    /// Intersect the viewing ray through `q` with the road plane.
    pub fn to_ground(&self, q: PixelPoint) -> Result<GroundPoint> {
        let k = &self.intrinsics;
        let ray = Vector3::new((q.u - k.center_u) / k.focal_u, (q.v - k.center_v) / k.focal_v, 1.0);
        let (sp, cp) = self.pose.pitch.sin_cos();
        // Downward (world) component of the ray; the road is hit only when positive.
        let down = ray.y * cp + ray.z * sp;
        if down.is_nan() || down <= MIN_HOMOGENEOUS_W * ray.norm() {
            return Err(Error::NoGroundIntersection { u: q.u, v: q.v });
        }
        let t = self.pose.camera_height / down;
        // Forward component along the level camera heading.
        let heading_lateral = t * ray.x;
        let heading_forward = t * (ray.z * cp - ray.y * sp);
        let (sy, cy) = self.pose.yaw.sin_cos();
        Ok(GroundPoint::new(
            cy * heading_lateral - sy * heading_forward,
            sy * heading_lateral + cy * heading_forward,
        ))
    }

    /// Image row of the horizon at the principal column.
    pub fn horizon_v(&self) -> f64 {
        self.intrinsics.center_v - self.intrinsics.focal_v * self.pose.pitch.tan()
    }
}
