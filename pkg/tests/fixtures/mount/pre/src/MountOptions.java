public class MountOptions {
    private boolean mReadOnly;

    public static MountOptions defaults() {
        return new MountOptions();
    }

    public boolean isReadOnly() {
        return mReadOnly;
    }

    public void setReadOnly(boolean readOnly) {
        mReadOnly = readOnly;
    }
}
