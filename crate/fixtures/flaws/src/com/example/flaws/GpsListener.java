package com.example.flaws;

import android.location.Location;
import android.location.LocationListener;
import android.os.Bundle;

public class GpsListener implements LocationListener {
    private int updates;

    @Override
    public void onLocationChanged(Location location) {
        updates++;
    }

    @Override
    public void onStatusChanged(String provider, int status, Bundle extras) {
        updates = 0;
    }

    @Override
    public void onProviderEnabled(String provider) {
        updates = 0;
    }

    @Override
    public void onProviderDisabled(String provider) {
        updates = -1;
    }
}
